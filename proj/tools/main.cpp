#include <iostream>
#include <string>
#include <vector>

#include "saedet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return saedet::cli::run(args, std::cout, std::cerr);
}
