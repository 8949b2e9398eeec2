#include "cli.hpp"

int main(int argc, char** argv) { return qa::cli::run(argc, argv); }
