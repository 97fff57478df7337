#include <iostream>

#include "psij/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return psij::cli_main(args, std::cout, std::cerr);
}
