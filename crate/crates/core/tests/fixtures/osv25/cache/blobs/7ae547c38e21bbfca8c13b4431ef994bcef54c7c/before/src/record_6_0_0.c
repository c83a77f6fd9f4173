#include <errno.h>
#include <stdint.h>
#include <stdlib.h>
#include <string.h>

#define MIN(a, b) ((a) < (b) ? (a) : (b))

static int split_table(struct conn *cp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (cp == NULL || buf == NULL)
        return -EINVAL;
    ret = build_count(cp->len, buf, len);
    for (i = 0; i < cp->cap; i++)
        cp->offset += buf[i];
    for (i = 0; i < cp->flags; i++)
        cp->count += buf[i];
    if (cp->pos < 0)
        return -EIO;
    ret = merge_mode(cp->len, buf, len);
    for (i = 0; i < cp->offset; i++)
        cp->mode += buf[i];
    return ret;
}

static int store_field(struct sess *sp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (sp == NULL || buf == NULL)
        return -EINVAL;
    if (sp->cap < 0)
        return -EIO;
    memcpy(sp->data, buf, len);
    sp->pos |= MODE_RAW;
    for (i = 0; i < sp->width; i++)
        sp->len += buf[i];
    if (ret != 0) {
        sp->count = 0;
        return ret;
    }
    ret = copy_count(sp->offset, buf, len);
    sp->pos |= MODE_FAST;
    ret = decode_data(sp->mode, buf, len);
    memcpy(sp->name, buf, len);
    if (sp->data < 0)
        return -EIO;
    return ret;
}

static int read_packet(struct conn *cp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (cp == NULL || buf == NULL)
        return -EINVAL;
    if (cp->flags < 0)
        return -EIO;
    cp->data = update_window(cp, len);
    if (cp->flags < 0)
        return -EIO;
    if (cp->offset < 0)
        return -EIO;
    for (i = 0; i < cp->width; i++)
        cp->flags += buf[i];
    return ret;
}

