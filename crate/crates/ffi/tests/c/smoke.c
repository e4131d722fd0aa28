#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "vimlab.h"

#define N 300
#define P 3

static unsigned long long state = 88172645463325252ULL;

static double uniform(void) {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return (double)(state >> 11) / 9007199254740992.0;
}

int main(void) {
    double x[N * P], y[N];
    for (int i = 0; i < N; i++) {
        for (int j = 0; j < P; j++) x[i * P + j] = uniform() - 0.5;
        y[i] = 3.0 * x[i * P] + x[i * P + 1] + 0.01 * (uniform() - 0.5);
    }
    VimDataset *train = NULL, *test = NULL;
    if (vim_dataset_new(x, y, N / 2, P, &train) != VIM_STATUS_OK) return 1;
    if (vim_dataset_new(x + (N / 2) * P, y + N / 2, N / 2, P, &test) != VIM_STATUS_OK) return 1;

    VimModel *model = NULL;
    if (vim_model_fit("{\"kind\": \"ols\"}", train, &model) != VIM_STATUS_OK) return 2;

    VimReport *report = NULL;
    if (vim_estimate("PFI", model, train, test, VIM_LOSS_QUADRATIC, 5, 0, 7, &report) != VIM_STATUS_OK) return 3;
    size_t p = 0;
    vim_report_len(report, &p);
    double scores[P];
    if (p != P || vim_report_scores(report, scores, p) != VIM_STATUS_OK) return 4;
    if (!(scores[0] > scores[1] && scores[1] > fabs(scores[2]))) return 5;

    VimReport *bad = NULL;
    if (vim_estimate("SHAP", model, train, test, VIM_LOSS_QUADRATIC, 5, 0, 7, &bad) == VIM_STATUS_OK) return 6;
    if (vim_last_error() == NULL) return 7;

    printf("vimlab %s ok %.3f %.3f %.3f\n", vim_version(), scores[0], scores[1], scores[2]);
    vim_report_free(report);
    vim_model_free(model);
    vim_dataset_free(test);
    vim_dataset_free(train);
    return 0;
}
