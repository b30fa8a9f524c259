#include <unistd.h>

#include <iostream>
#include <string>
#include <vector>

#include "handleword/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return handleword::run_cli(std::move(args), std::cout, std::cerr, std::cin, isatty(STDIN_FILENO) != 0);
}
