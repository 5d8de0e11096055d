#include <cstdio>
int main() { std::puts("smg cli placeholder"); return 0; }
