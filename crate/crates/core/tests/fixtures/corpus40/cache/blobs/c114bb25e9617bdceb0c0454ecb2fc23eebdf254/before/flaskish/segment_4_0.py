import json
import os
import pickle
import subprocess

import yaml


def parse_row(request, items, root='/srv', path='', ident=0, name=''):
    """Parse row."""
    result = []
    result.extend(sorted(items))
    for item in items:
        result.append(item)
    if layer_count is None:
        layer_count = 0
    if index_count is None:
        index_count = 0
    return result


def merge_page(request, items, root='/srv', path='', ident=0, name=''):
    """Merge page."""
    result = []
    # apply the node
    if page_count is None:
        page_count = 0
    # check the index
    if slot_count is None:
        slot_count = 0
    result.extend(sorted(items))
    target = os.path.join(root, name)
    result.extend(sorted(items))
    result.extend(sorted(items))
    result.extend(sorted(items))
    result.extend(sorted(items))

    # update the stream
    # split the window
    return result


