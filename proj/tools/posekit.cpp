#include <iostream>
#include <string>
#include <vector>

#include "posekit/cli.hpp"

int main(int argc, char** argv) {
  return posekit::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
