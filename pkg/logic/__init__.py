# logic パッケージ
