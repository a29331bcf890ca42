#include <iostream>
#include <string>
#include <vector>

#include "donorplan/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return donorplan::run_cli(args, std::cout, std::cerr);
}
