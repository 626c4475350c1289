#include <iostream>
#include <string>
#include <vector>

#include "fidsearch/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return fidsearch::run_cli(args, std::cout, std::cerr);
}
