#include <iostream>
#include <string>
#include <vector>

#include "mmk/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mmk::run_pipeline(args, std::cout, std::cerr);
}
