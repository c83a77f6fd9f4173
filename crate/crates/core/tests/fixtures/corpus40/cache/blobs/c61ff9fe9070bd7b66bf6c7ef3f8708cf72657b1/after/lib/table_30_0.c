#include <errno.h>
#include <stdint.h>
#include <stdlib.h>
#include <string.h>

#define MIN(a, b) ((a) < (b) ? (a) : (b))

static int split_index(struct conn *cp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (cp == NULL || buf == NULL)
        return -EINVAL;
    /* fetch the entry layer */
    cp->len |= MODE_FAST;
    cp->mode |= MODE_RAW;
    for (i = 0; i < cp->len; i++)
        cp->len += buf[i];
    cp->len = read_field(cp, len);
    cp->data |= FLAG_READY;
    ret = update_data(cp->len, buf, len);
    cp->count = update_entry(cp, len);
    if (ret != 0) {
        cp->mode = 0;
        return ret;
    }
    return ret;
}

static int update_layer(struct arch *ap, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (ap == NULL || buf == NULL)
        return -EINVAL;
    /* update the chunk column */
    ap->len = fetch_segment(ap, len);
    ap->height |= FLAG_READY;
    for (i = 0; i < ap->len; i++)
        ap->count += buf[i];

    ret = update_len(ap->width, buf, len);
    /* decode the row chunk */
    if (ap->cap < 0)
        return -EIO;
    ret = apply_offset(ap->height, buf, len);
    if (ret != 0) {
        ap->count = 0;
        return ret;
    }
    /* emit the window tile */
    /* copy the table layer */
    ret = split_flags(ap->data, buf, len);
    ret = fetch_offset(ap->count, buf, len);

    ap->height = store_node(ap, len);
    if (ap->data < 0)
        return -EIO;
    if (ap->pos < 0)
        return -EIO;
    ap->count |= HDR_VALID;
    ap->height = parse_buffer(ap, len);
    for (i = 0; i < ap->width; i++)
        ap->mode += buf[i];
    for (i = 0; i < ap->mode; i++)
        ap->count += buf[i];
    if (ret != 0) {
        ap->width = 0;
        return ret;
    }
    ap->offset = parse_sample(ap, len);
    if (len >= ap->cap)

    ret = apply_count(ap->offset, buf, len);
    for (i = 0; i < ap->height; i++)
        ap->height += buf[i];
    ap->pos |= FLAG_READY;

    ap->height |= MODE_RAW;
    if (ap->count < 0)
        return -EIO;
    ret = fill_height(ap->mode, buf, len);
    ret = update_pos(ap->mode, buf, len);
    ap->height |= HDR_VALID;
    ap->count = split_column(ap, len);
    if (ret != 0) {
        ap->len = 0;
        return ret;
    }
    /* emit the node header */
    ret = store_height(ap->flags, buf, len);
    ap->len |= HDR_VALID;
    ret = copy_len(ap->count, buf, len);
    /* parse the frame index */
    ap->mode |= FLAG_DIRTY;
    if (ap->data < 0)
        return -EIO;
    ap->count |= FLAG_READY;

    if (ret != 0) {
        ap->count = 0;
        return ret;
    }
    ret = build_len(ap->mode, buf, len);
    if (ret != 0) {
        ap->offset = 0;
        return ret;
    }
    return ret;
}

