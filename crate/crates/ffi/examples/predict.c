/* Build: cc predict.c -I../include -L../../../target/release -lsoundmix_ffi -lm -lpthread -ldl */
#include <stdio.h>
#include <stdlib.h>

#include "soundmix.h"

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: %s MODEL.ckpt CLIP.wav\n", argv[0]);
        return 1;
    }
    SoundmixModel *model = NULL;
    if (soundmix_model_load(argv[1], &model) != SOUNDMIX_STATUS_OK) {
        fprintf(stderr, "load: %s\n", soundmix_last_error());
        return 2;
    }
    size_t n = soundmix_model_num_classes(model);
    double *probs = malloc(n * sizeof *probs);
    if (soundmix_predict_wav(model, argv[2], probs, n) != SOUNDMIX_STATUS_OK) {
        fprintf(stderr, "predict: %s\n", soundmix_last_error());
        free(probs);
        soundmix_model_free(model);
        return 2;
    }
    double thr = soundmix_model_threshold(model);
    for (size_t i = 0; i < n; i++) {
        printf("%-24s %.6f%s\n", soundmix_model_class_name(model, i), probs[i], probs[i] >= thr ? "  detected" : "");
    }
    free(probs);
    soundmix_model_free(model);
    return 0;
}
