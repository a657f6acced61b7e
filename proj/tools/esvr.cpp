#include <iostream>

#include "esvr/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return esvr::run_cli(args, std::cout, std::cerr);
}
