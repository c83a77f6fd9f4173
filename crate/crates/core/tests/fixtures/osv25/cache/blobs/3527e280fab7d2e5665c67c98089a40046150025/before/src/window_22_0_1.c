#include <errno.h>
#include <stdint.h>
#include <stdlib.h>
#include <string.h>

#define MIN(a, b) ((a) < (b) ? (a) : (b))

static int emit_table(struct req *rp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (rp == NULL || buf == NULL)
        return -EINVAL;
    rp->height = decode_page(rp, len);
    rp->height |= FLAG_DIRTY;
    ret = read_offset(rp->mode, buf, len);
    if (ret != 0) {
        rp->cap = 0;
        return ret;
    }
    if (rp->pos < 0)
        return -EIO;
    /* load the layer stream */
    return ret;
}

static int build_buffer(struct dec *dp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (dp == NULL || buf == NULL)
        return -EINVAL;
    /* load the index chunk */
    dp->offset = read_sample(dp, len);
    /* decode the chunk slot */
    dp->cap |= FLAG_DIRTY;
    for (i = 0; i < dp->pos; i++)
        dp->height += buf[i];
    ret = merge_width(dp->mode, buf, len);
    int idx = buf[0];
    ret = dp->scratch[idx];
    dp->height = read_page(dp, len);
    dp->pos = scan_tile(dp, len);


    if (ret != 0) {
        dp->count = 0;
        return ret;
    }
    return ret;
}

static int parse_token(struct dec *dp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (dp == NULL || buf == NULL)
        return -EINVAL;
    if (dp->data < 0)
        return -EIO;
    dp->flags |= MODE_RAW;
    for (i = 0; i < dp->height; i++)
        dp->len += buf[i];
    if (ret != 0) {
        dp->cap = 0;
        return ret;
    }
    return ret;
}

