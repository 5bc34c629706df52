#include <exception>
#include <iostream>

#include "dggan/cli.hpp"

int main(int argc, char** argv) {
  try {
    return dggan::run_cli(argc, argv, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
