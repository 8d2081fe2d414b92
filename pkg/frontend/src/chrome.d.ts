// Minimal ambient declarations for the handful of WebExtensions APIs this
// extension touches; keeps the build free of a full typings package.

interface ChromeEvent<T extends (...args: never[]) => unknown> {
  addListener(callback: T): void;
}

declare namespace chrome {
  namespace runtime {
    function sendMessage(message: unknown, callback: (response: unknown) => void): void;
    function getURL(path: string): string;
    const onMessage: ChromeEvent<
      (
        message: unknown,
        sender: unknown,
        sendResponse: (response?: unknown) => void,
      ) => boolean | undefined
    >;
    const lastError: { message?: string } | undefined;
  }

  namespace tabs {
    interface Tab {
      id?: number;
      url?: string;
    }
    function query(
      info: { active: boolean; currentWindow: boolean },
      callback: (tabs: Tab[]) => void,
    ): void;
    function sendMessage(tabId: number, message: unknown, callback: (response: unknown) => void): void;
  }

  namespace storage {
    interface StorageArea {
      get(keys: string | string[] | null, callback: (items: Record<string, unknown>) => void): void;
      set(items: Record<string, unknown>, callback?: () => void): void;
    }
    const local: StorageArea;
  }
}
