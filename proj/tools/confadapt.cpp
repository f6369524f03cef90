#include "confadapt/cli.hpp"

int main(int argc, char** argv) { return confadapt::cli::run(argc, argv); }
