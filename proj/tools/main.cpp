#include "coughhmm/cli.hpp"

int main(int argc, char** argv) { return cough::cli::run(argc, argv); }
