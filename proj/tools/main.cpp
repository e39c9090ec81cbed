#include "cli.hpp"

int main(int argc, char** argv) { return azsearch::cli::run(argc, argv); }
