#include "microfarm/cli.hpp"

int main(int argc, char** argv) { return microfarm::cli::main(argc, argv); }
