import io

def load(path, url, session):
    handle = io.open(path)
    reply = session.post(url)
    mysubprocess.call(reply)
    reconnect(session)
    return handle
