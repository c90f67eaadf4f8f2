#include "dvd/cli.hpp"

int main(int argc, char** argv) {
  return dvd::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
