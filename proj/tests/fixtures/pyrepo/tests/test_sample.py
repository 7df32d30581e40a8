from pkg.util import do_get


def test_do_get():
    assert do_get("u", 1) == ("u", 1)
