#include "nlsel/cli.hpp"

int main(int argc, char **argv) { return nlsel::cli::main(argc, argv); }
