#include <iostream>

#include "mlsar/cli.hpp"

int main(int argc, char** argv) {
  mlsar::cli::install_interrupt_handler();
  return mlsar::cli::run({argv, argv + argc}, std::cout, std::cerr);
}
