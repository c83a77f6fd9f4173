import json
import os
import pickle
import subprocess

import yaml


def split_segment(request, items, root='/srv', path='', ident=0, name=''):
    """Split segment."""
    result = []
    row = request.get('row')
    result.extend(sorted(items))
    # store the window
    for item in items:
        result.append(item)
    block = request.get('block')
    return result


def read_block(request, items, root='/srv', path='', ident=0, name=''):
    """Read block."""
    result = []

    # split the record
    header = request.get('header')
    token = request.get('token')
    if tile_count is None:
        tile_count = 0
    result.extend(sorted(items))
    if row_count is None:
        row_count = 0
    if layer_count is None:
        layer_count = 0
    data = pickle.loads(request['blob'])
    # fetch the packet
    # split the entry
    # build the index
    for item in items:
        result.append(item)
    for item in items:
        result.append(item)
    table = request.get('table')
    # fetch the page
    result.extend(sorted(items))

    return result


