#ifndef REGTRACK_REGTRACK_H
#define REGTRACK_REGTRACK_H

#include <stdint.h>

#if defined(_WIN32)
#define REGTRACK_API __declspec(dllexport)
#else
#define REGTRACK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rt_status {
  RT_OK = 0,
  RT_ERR_INVALID_ARGUMENT = 1,
  RT_ERR_DIMENSION_MISMATCH = 2,
  RT_ERR_DEGENERATE = 3,
  RT_ERR_SINGULAR_WARP = 4,
  RT_ERR_UNSUPPORTED = 5,
  RT_ERR_PARSE = 6,
  RT_ERR_IO = 7,
  RT_ERR_MISSING_DATASET = 8,
  RT_ERR_INTERNAL = 9
} rt_status;

typedef struct rt_image rt_image;
typedef struct rt_tracker rt_tracker;

/* Corners are 8 doubles: ulx uly urx ury lrx lry llx lly. */

/* Message for the last failing call on this thread; never NULL. */
REGTRACK_API const char* rt_last_error(void);
REGTRACK_API const char* rt_status_name(rt_status status);

/* Row-major intensities in [0,255]. */
REGTRACK_API rt_status rt_image_create(int width, int height, const double* data, rt_image** out);
/* PGM/PPM (P2, P3, P5, P6). */
REGTRACK_API rt_status rt_image_load(const char* path, rt_image** out);
REGTRACK_API rt_status rt_image_size(const rt_image* image, int* width, int* height);
REGTRACK_API void rt_image_destroy(rt_image* image);

/* spec: key=value tokens, e.g. "am=ncc sm=esm ssm=homography seed=3". */
REGTRACK_API rt_status rt_tracker_create(const char* spec, const rt_image* first_frame, const double corners[8],
                                         rt_tracker** out);
/* diverged and seconds may be NULL. */
REGTRACK_API rt_status rt_tracker_track(rt_tracker* tracker, const rt_image* frame, double corners_out[8],
                                        int* diverged, double* seconds);
REGTRACK_API void rt_tracker_destroy(rt_tracker* tracker);

/* RMS of the four corner distances. */
REGTRACK_API rt_status rt_alignment_error(const double a[8], const double b[8], double* out);

typedef struct rt_run_options {
  /* Exactly one of config_path / config_text. */
  const char* config_path;
  const char* config_text;
  /* Overrides; NULL / 0 keep the config's value. */
  const char* out_dir;
  int has_seed;
  uint64_t seed;
  int workers;
} rt_run_options;

typedef struct rt_run_result {
  int combinations;
  int skipped;
  int sequences;
  int64_t evaluation_frames;
} rt_run_result;

REGTRACK_API rt_status rt_run_matrix(const rt_run_options* options, rt_run_result* result);

/* group_by: "sm", "am" or "ssm". Writes SVG files into out_dir. */
REGTRACK_API rt_status rt_emit_plot(const char* summary_csv, const char* group_by, const char* out_dir,
                                    int* files_written);

/* Renders the config's synth.* sequences into <out_dir>/<name>/. */
REGTRACK_API rt_status rt_synth(const rt_run_options* options, int* sequences_written);

/* Least-squares projection of a ground-truth file onto a lower-DOF SSM. */
REGTRACK_API rt_status rt_project_gt(const char* groundtruth_in, const char* ssm, const char* groundtruth_out);

#ifdef __cplusplus
}
#endif

#endif
