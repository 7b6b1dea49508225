#include "app.hpp"

int main(int argc, char** argv) { return tess::main_cli(argc, argv); }
