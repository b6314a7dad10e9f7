#include <iostream>

#include "qarag/cli.hpp"

int main(int argc, char** argv) {
  return qarag::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cin, std::cout, std::cerr);
}
