use std::io::{self, BufRead, BufReader, Write};
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::{Command, CommandResult, Controller};

/// A running socket server. One JSON command per line in, one JSON result
/// per line out.
pub struct Server {
    path: PathBuf,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Server {
    /// Binds `path` (replacing a stale socket file) and serves on a
    /// background thread.
    pub fn bind(path: impl AsRef<Path>, controller: Arc<Controller>) -> io::Result<Server> {
        let path = path.as_ref().to_path_buf();
        let listener = bind(&path)?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let handle = thread::spawn(move || accept_loop(listener, controller, &flag));
        Ok(Server {
            path,
            stop,
            handle: Some(handle),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = UnixStream::connect(&self.path);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
        let _ = std::fs::remove_file(&self.path);
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if self.handle.is_some() {
            self.stop_now();
        }
    }
}

/// Serves on the calling thread until the process exits.
pub fn serve(path: impl AsRef<Path>, controller: Arc<Controller>) -> io::Result<()> {
    let listener = bind(path.as_ref())?;
    accept_loop(listener, controller, &AtomicBool::new(false));
    Ok(())
}

/// Sends one command and waits for its result.
pub fn request(path: impl AsRef<Path>, cmd: &Command) -> io::Result<CommandResult> {
    let mut stream = UnixStream::connect(path)?;
    let mut line = serde_json::to_string(cmd)?;
    line.push('\n');
    stream.write_all(line.as_bytes())?;
    let mut reply = String::new();
    BufReader::new(stream).read_line(&mut reply)?;
    Ok(serde_json::from_str(&reply)?)
}

fn bind(path: &Path) -> io::Result<UnixListener> {
    if path.exists() {
        std::fs::remove_file(path)?;
    }
    UnixListener::bind(path)
}

fn accept_loop(listener: UnixListener, controller: Arc<Controller>, stop: &AtomicBool) {
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let c = Arc::clone(&controller);
        thread::spawn(move || {
            let _ = handle(stream, &c);
        });
    }
}

fn handle(stream: UnixStream, controller: &Controller) -> io::Result<()> {
    let mut out = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let result = match serde_json::from_str::<Command>(&line) {
            Ok(cmd) => controller.execute(&cmd),
            Err(e) => CommandResult::Error {
                code: "bad_request".into(),
                message: e.to_string(),
            },
        };
        let mut reply = serde_json::to_string(&result)?;
        reply.push('\n');
        out.write_all(reply.as_bytes())?;
    }
    Ok(())
}
