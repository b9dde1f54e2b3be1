#include "mvlatent/commands.hpp"

int main(int argc, char** argv) { return mvlatent::cli::run_cli(argc, argv); }
