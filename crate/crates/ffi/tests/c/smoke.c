#include <math.h>
#include <stdio.h>
#include <string.h>

#include "voxdx.h"

int main(int argc, char **argv) {
    if (argc != 2) {
        return 64;
    }
    if (fabs(voxdx_weighted_score(1.0, 1.0, 1.0) - 1.0) > 1e-12) {
        return 1;
    }
    VoxdxModel *model = NULL;
    if (voxdx_model_load("/nonexistent/model.json", &model) != VOXDX_STATUS_IO) {
        return 2;
    }
    if (voxdx_last_error_message() == NULL) {
        return 3;
    }
    if (voxdx_model_load(argv[1], &model) != VOXDX_STATUS_OK) {
        fprintf(stderr, "%s\n", voxdx_last_error_message());
        return 4;
    }
    size_t dim = voxdx_model_feature_dim(model);
    double features[64];
    memset(features, 0, sizeof features);
    uint32_t label = 99;
    VoxdxStatus st = voxdx_model_predict_features(model, features, dim, &label);
    voxdx_model_free(model);
    if (st != VOXDX_STATUS_OK || voxdx_label_name(label) == NULL) {
        return 5;
    }
    printf("%s\n", voxdx_label_name(label));
    return 0;
}
