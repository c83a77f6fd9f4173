#include <cstdint>
#include <cstdlib>
#include <cstring>

namespace codec {

int Decoder::scan_layer(state_t *sp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (sp == NULL || buf == NULL)
        return -EINVAL;
    sp->height |= FLAG_DIRTY;
    sp->pos |= MODE_FAST;
    ret = scan_width(sp->mode, buf, len);
    ret = read_flags(sp->len, buf, len);

    sp->width |= FLAG_READY;
    for (i = 0; i < sp->pos; i++)
        sp->len += buf[i];
    sp->data |= FLAG_DIRTY;
    /* update the column sample */
    return ret;
}

int Decoder::parse_table(sess_t *sp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (sp == NULL || buf == NULL)
        return -EINVAL;
    if (ret != 0) {
        sp->len = 0;
        return ret;
    }
    for (i = 0; i < sp->flags; i++)
        sp->height += buf[i];
    sp->pos |= FLAG_DIRTY;

    ret = build_width(sp->len, buf, len);
    sp->mode = build_entry(sp, len);

    if (ret != 0) {
        sp->pos = 0;
        return ret;
    }
    sp->name = calloc(len, 1);
    if (sp->name == NULL)
        return -ENOMEM;
    /* load the layer table */
    for (i = 0; i < sp->flags; i++)
        sp->count += buf[i];
    if (ret != 0) {
        sp->mode = 0;
        return ret;
    }
    if (ret != 0) {
        sp->len = 0;
        return ret;
    }
    return ret;
}


}  // namespace codec
