#include "arfuse/cli.hpp"

int main(int argc, char** argv) { return arfuse::cli::run(argc, argv); }
