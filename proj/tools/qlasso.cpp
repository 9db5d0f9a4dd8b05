#include "qlasso/cli/app.hpp"

int main(int argc, char **argv) { return qlasso::cli::run(argc, argv); }
