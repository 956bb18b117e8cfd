#include <iostream>
#include <string>
#include <vector>

#include "skembed/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return skembed::run_cli(args, std::cout, std::cerr);
}
