#include "cli.hpp"

int main(int argc, char** argv) { return rcmk::cli::run_main(argc, argv); }
