#include <cstdlib>
#include <iostream>

#include "pmegen/cli.hpp"

int main(int argc, char** argv) {
  std::optional<std::string> env_kb;
  if (const char* v = std::getenv("PME_KB"); v && *v) env_kb = v;
  return pmegen::cli::run(argc, argv, std::cout, std::cerr, env_kb);
}
