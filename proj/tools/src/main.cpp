#include <iostream>
#include <string>
#include <vector>

#include "nliart/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return nliart::cli::Run(args, std::cout, std::cerr);
}
