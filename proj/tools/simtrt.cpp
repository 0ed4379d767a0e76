#include <iostream>
#include <string>
#include <vector>

#include "simt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return simt::cli::cli_main(args, std::cout, std::cerr);
}
