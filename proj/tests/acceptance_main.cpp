#include "k2gof/k2gof.hpp"
int main(){return 0;}
