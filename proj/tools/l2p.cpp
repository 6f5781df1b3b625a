#include <iostream>

#include "l2p/cli.hpp"

int main(int argc, char** argv) {
  return l2p::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
