// Test plugin: x+ = 0.5 x + 0.1 w over the STEP/OK line protocol.
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "scbc/rng.hpp"

int main() {
  std::string line;
  while (std::getline(std::cin, line)) {
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag != "STEP") return 3;
    std::vector<double> x;
    std::string tok;
    unsigned long long seed = 0;
    while (is >> tok) {
      if (tok == "SEED") {
        is >> seed;
        break;
      }
      x.push_back(std::stod(tok));
    }
    std::printf("OK");
    for (double v : x) std::printf(" %.17g", 0.5 * v + 0.1 * scbc::rng::standard_normal(seed));
    std::printf("\n");
    std::fflush(stdout);
  }
  return 0;
}
