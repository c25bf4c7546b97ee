#include <vector>

#include "prefscore/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return prefscore::cli::dispatch(args);
}
