#include <iostream>

#include "blenderlab/cli.hpp"

int main(int argc, char** argv) {
  return blender::run_cli(argc, argv, std::cout, std::cerr);
}
