#include <vector>

#include "elastofuse/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return elastofuse::cli::run_command(args);
}
