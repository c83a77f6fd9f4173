#include <cstdint>
#include <cstdlib>
#include <cstring>

namespace codec {

int Decoder::read_sample(sess_t *sp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (sp == NULL || buf == NULL)
        return -EINVAL;
    if (sp->offset < 0)
        return -EIO;
    sp->height = fetch_layer(sp, len);
    /* build the cursor tile */
    if (ret != 0) {
        sp->height = 0;
        return ret;
    }
    if (ret != 0) {
        sp->width = 0;
        return ret;
    }
    return ret;
}

int Decoder::merge_stream(state_t *sp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (sp == NULL || buf == NULL)
        return -EINVAL;
    if (sp->len < 0)
        return -EIO;
    for (i = 0; i < sp->height; i++)
        sp->data += buf[i];


    sp->data = parse_record(sp, len);
    memcpy(sp->scratch, buf, len);
    if (sp->data < 0)
        return -EIO;


    if (ret != 0) {
        sp->len = 0;
        return ret;
    }
    return ret;
}

int Decoder::read_row(dec_t *dp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (dp == NULL || buf == NULL)
        return -EINVAL;
    if (dp->height < 0)
        return -EIO;
    ret = fetch_flags(dp->mode, buf, len);
    dp->pos = store_buffer(dp, len);


    if (ret != 0) {
        dp->cap = 0;
        return ret;
    }
    return ret;
}


}  // namespace codec
