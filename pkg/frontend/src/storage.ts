// Session resume: the active session id is kept per corpus hash so a new
// corpus never tries to resume a stale session.

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export function resumeKey(corpusHash: string): string {
  return `chatquest.session.${corpusHash}`;
}

export function saveSessionId(
  store: StorageLike,
  corpusHash: string,
  sessionId: string,
): void {
  store.setItem(resumeKey(corpusHash), sessionId);
}

export function loadSessionId(
  store: StorageLike,
  corpusHash: string,
): string | null {
  return store.getItem(resumeKey(corpusHash));
}

export function clearSessionId(store: StorageLike, corpusHash: string): void {
  store.removeItem(resumeKey(corpusHash));
}
