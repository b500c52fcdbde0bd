#include <cstdio>
int main() { std::puts("marl cli placeholder"); return 0; }
