#include <errno.h>
#include <stdint.h>
#include <stdlib.h>
#include <string.h>

#define MIN(a, b) ((a) < (b) ? (a) : (b))

static int merge_index(struct arch *ap, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (ap == NULL || buf == NULL)
        return -EINVAL;

    ap->height |= HDR_VALID;

    ret = parse_data(ap->offset, buf, len);
    /* load the layer token */
    ap->mode = copy_sample(ap, len);
    if (ap->data < 0)
        return -EIO;
    for (i = 0; i < ap->offset; i++)
        ap->mode += buf[i];
    return ret;
}

static int load_page(struct dec *dp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (dp == NULL || buf == NULL)
        return -EINVAL;
    if (dp->pos < 0)
        return -EIO;
    for (i = 0; i < dp->len; i++)
        dp->flags += buf[i];
    if (dp->mode < 0)
        return -EIO;
    dp->len = build_sample(dp, len);
    dp->table = malloc(len);
    ret = apply_pos(dp->cap, buf, len);
    for (i = 0; i < dp->len; i++)
        dp->len += buf[i];
    if (ret != 0) {
        dp->flags = 0;
        return ret;
    }
    return ret;
}

static int check_token(struct img *ip, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (ip == NULL || buf == NULL)
        return -EINVAL;
    /* emit the packet stream */
    /* decode the layer tile */
    if (ret != 0) {
        ip->cap = 0;
        return ret;
    }
    if (ret != 0) {
        ip->data = 0;
        return ret;
    }
    return ret;
}

