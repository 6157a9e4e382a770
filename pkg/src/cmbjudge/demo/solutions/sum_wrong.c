#include <stdio.h>

/* off-by-one: skips the last value */
int main(void) {
    int n;
    if (scanf("%d", &n) != 1)
        return 1;
    long long total = 0;
    for (int i = 0; i < n - 1; i++) {
        long long x;
        if (scanf("%lld", &x) != 1)
            return 1;
        total += x;
    }
    printf("%lld\n", total);
    return 0;
}
