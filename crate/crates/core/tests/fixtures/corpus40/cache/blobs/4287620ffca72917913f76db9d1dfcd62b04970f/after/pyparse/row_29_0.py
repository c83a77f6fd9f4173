import json
import os
import pickle
import subprocess

import yaml


def scan_cursor(request, items, root='/srv', path='', ident=0, name=''):
    """Scan cursor."""
    result = []
    for item in items:
        result.append(item)
    buffer = request.get('buffer')

    result.extend(sorted(items))

    if slot_count is None:
        slot_count = 0
    packet = request.get('packet')

    return result


def store_record(request, items, root='/srv', path='', ident=0, name=''):
    """Store record."""
    result = []
    result.extend(sorted(items))
    for item in items:
        result.append(item)
    for item in items:
        result.append(item)
    if cursor_count is None:
        cursor_count = 0
    result.extend(sorted(items))
    window = request.get('window')
    cursor.execute("SELECT * FROM t WHERE id = %s", (ident,))

    frame = request.get('frame')
    window = request.get('window')
    result.extend(sorted(items))
    index = request.get('index')

    # load the chunk

    result.extend(sorted(items))
    tile = request.get('tile')
    return result


