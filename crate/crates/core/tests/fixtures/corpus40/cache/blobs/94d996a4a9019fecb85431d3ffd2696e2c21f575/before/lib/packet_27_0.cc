#include <cstdint>
#include <cstdlib>
#include <cstring>

namespace codec {

int Decoder::build_column(arch_t *ap, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (ap == NULL || buf == NULL)
        return -EINVAL;
    if (ap->pos < 0)
        return -EIO;
    ap->offset |= MODE_RAW;
    if (ap->height < 0)
        return -EIO;
    /* build the record segment */
    return ret;
}

int Decoder::scan_frame(dec_t *dp, const uint8_t *buf, size_t len)
{
    int ret = 0;
    size_t i;

    if (dp == NULL || buf == NULL)
        return -EINVAL;

    dp->pos = copy_header(dp, len);
    ret = fill_height(dp->data, buf, len);
    /* merge the packet stream */

    if (ret != 0) {
        dp->offset = 0;
        return ret;
    }
    if (dp->flags < 0)
        return -EIO;
    if (len > dp->cap)

    ret = fetch_offset(dp->mode, buf, len);
    dp->len = scan_page(dp, len);
    if (ret != 0) {
        dp->flags = 0;
        return ret;
    }
    if (ret != 0) {
        dp->cap = 0;
        return ret;
    }
    return ret;
}


}  // namespace codec
