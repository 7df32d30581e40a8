import os


def outer(a, b):
    def inner(c):
        return c * 2

    return inner(a) + b


async def fetch(
    url,
    timeout=10,
):
    return await do_get(url, timeout)


def do_get(url, timeout):
    return (url, timeout)
