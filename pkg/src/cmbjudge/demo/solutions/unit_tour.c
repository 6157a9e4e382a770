#include <stdio.h>

/* identity tour: valid, not short */
int main(void) {
    int n;
    if (scanf("%d", &n) != 1)
        return 1;
    for (int i = 0; i < n; i++)
        printf(i ? " %d" : "%d", i);
    printf("\n");
    return 0;
}
