#include <iostream>

#include "xienh/cli.hpp"

int main(int argc, char** argv) {
  return xienh::run_cli({argv, argv + argc}, std::cout, std::cerr);
}
