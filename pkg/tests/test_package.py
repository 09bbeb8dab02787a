from pathlib import Path

from pytest import mark as m

import npg_hpf

GPL_NOTICE = "GNU General Public License"
COPYRIGHT = "# Copyright © 2026 Genome Research Ltd. All rights reserved."


@m.describe("Package")
class TestPackage:
    @m.context("When the version is requested")
    @m.it("Returns a version string")
    def test_version(self):
        assert isinstance(npg_hpf.version(), str)

    @m.context("When a module carries the licence notice")
    @m.it("Carries the copyright line too")
    def test_copyright(self):
        headed = [
            path
            for path in Path("./src/npg_hpf").rglob("*.py")
            if GPL_NOTICE in path.read_text(encoding="utf-8")
        ]
        assert Path("./src/npg_hpf/harness/cli.py") in headed
        for path in headed:
            head = path.read_text(encoding="utf-8").splitlines()[:3]
            assert COPYRIGHT in head, path
