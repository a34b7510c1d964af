use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use ivise_core::geometry::PartKind;
use ivise_core::provider::{PoseProvider, ProviderError, RemoteConfig, RemoteProvider};
use ivise_core::regions::preprocess;
use ivise_core::Frame;

/// Serves one request with `status` and `body`, after `delay`. Returns the URL
/// and a handle yielding the received request body.
fn serve_once(status: &'static str, body: &'static str, delay: Duration) -> (String, thread::JoinHandle<Vec<u8>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/infer", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut request = vec![0u8; length];
        reader.read_exact(&mut request).unwrap();
        thread::sleep(delay);
        let mut stream = stream;
        let _ = write!(stream, "HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len());
        request
    });
    (url, handle)
}

fn frame() -> Frame {
    Frame::filled("cam1".into(), 3, 0, 320, 240, [50, 60, 70])
}

#[test]
fn grouped_answer_is_mapped_to_native_coordinates() {
    let body = "ivise-pose-response v1\ngrouped true\nperson 0 neck 80 40 0.9\nperson 0 left_hip 70 100 0.8\n";
    let (url, server) = serve_once("200 OK", body, Duration::ZERO);
    let mut provider = RemoteProvider::new(RemoteConfig::new(url));
    let pre = preprocess(&frame()).unwrap();
    let pose = provider.infer(&pre).unwrap();
    let request = server.join().unwrap();
    assert!(request.starts_with(b"P6\n160 160\n255\n"));
    assert_eq!(request.len(), "P6\n160 160\n255\n".len() + 160 * 160 * 3);

    assert_eq!(pose.sequence, 3);
    assert_eq!(pose.skeletons.len(), 1);
    let neck = pose.skeletons[0].position(PartKind::Neck).unwrap();
    assert_eq!((neck.x, neck.y), (160.0, 60.0));
}

#[test]
fn server_errors_are_unavailable() {
    let (url, server) = serve_once("503 Service Unavailable", "busy", Duration::ZERO);
    let mut provider = RemoteProvider::new(RemoteConfig::new(url));
    let err = provider.infer(&preprocess(&frame()).unwrap()).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, ProviderError::RemoteUnavailable(_)), "{err}");
}

#[test]
fn slow_endpoint_times_out() {
    let (url, server) = serve_once("200 OK", "ivise-pose-response v1\ngrouped true\n", Duration::from_millis(800));
    let mut config = RemoteConfig::new(url);
    config.timeout = Duration::from_millis(200);
    let err = RemoteProvider::new(config).infer(&preprocess(&frame()).unwrap()).unwrap_err();
    assert!(matches!(err, ProviderError::RemoteUnavailable(_)), "{err}");
    server.join().unwrap();
}

#[test]
fn refused_connection_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut provider = RemoteProvider::new(RemoteConfig::new(format!("http://127.0.0.1:{port}/infer")));
    let err = provider.infer(&preprocess(&frame()).unwrap()).unwrap_err();
    assert!(matches!(err, ProviderError::RemoteUnavailable(_)), "{err}");
}

#[test]
fn garbage_body_is_malformed() {
    let (url, server) = serve_once("200 OK", "<html>hello</html>", Duration::ZERO);
    let err = RemoteProvider::new(RemoteConfig::new(url)).infer(&preprocess(&frame()).unwrap()).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, ProviderError::MalformedResponse(_)), "{err}");
}
