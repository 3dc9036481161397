#include <iostream>

#include "spoc/cli.hpp"
#include "spoc_fixtures.hpp"

int main(int argc, char** argv) {
  return spoc::run_cli(argc, argv, std::cout, std::cerr, spoc::builtin_fixtures());
}
