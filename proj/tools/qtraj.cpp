#include <string>
#include <vector>

#include "qtraj/cli.hpp"

int main(int argc, char** argv) {
  return qtraj::cli::run(std::vector<std::string>(argv, argv + argc));
}
