#include "cli.hpp"

int main(int argc, char** argv) { return freqdoc::cli::run(argc, argv); }
