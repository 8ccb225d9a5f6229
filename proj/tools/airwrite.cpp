#include "airwrite/cli/cli.hpp"

int main(int argc, char** argv) { return airwrite::cli::main(argc, argv); }
