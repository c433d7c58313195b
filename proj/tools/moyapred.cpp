#include <iostream>
#include <string>
#include <vector>

#include "moyapred/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return moyapred::run_cli(args, std::cout, std::cerr);
}
