class Handler:
    def handle(self, event):
        if event:
            return "handled"
        return "ignored"

    def reset(self):
        self.state = None


def dispatch(handler, events):
    results = []
    for e in events:
        results.append(handler.handle(e))
    return results
