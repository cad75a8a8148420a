#include "prospect/cli/app.hpp"

int main(int argc, char** argv) { return prospect::cli::run(argc, argv); }
