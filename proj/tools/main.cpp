#include <vector>

#include "ijdi/cli_io.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ijdi::run_command(args);
}
