#include <stdio.h>

int main(void) {
    int n;
    if (scanf("%d", &n) != 1)
        return 1;
    double total = 0.0;
    for (int i = 1; i <= n; i++) {
        double x;
        if (scanf("%lf", &x) != 1)
            return 1;
        total += x;
        printf("%.9f\n", total / i);
    }
    return 0;
}
