#include <iostream>
#include <string>
#include <vector>

#include "detforge/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return detforge::cli::run_command(args, std::cout, std::cerr);
}
